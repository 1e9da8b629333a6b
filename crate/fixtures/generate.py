import json, os, base64, random, hashlib
R = os.path.dirname(os.path.abspath(__file__))
for d in ['corpus','workflows','sites','assets','images','detections']:
    os.makedirs(f'{R}/{d}', exist_ok=True)
rng = random.Random(20240917)

def dump(path, obj):
    with open(path,'w') as f:
        json.dump(obj, f, indent=2); f.write('\n')

# ---------------- corpus ----------------
docs = [
 ("img2img_basic", "Basic image to image", "Convert image to image: take an input picture, resize it and repaint it with the ThinkDiffusion XL checkpoint guided by a text prompt."),
 ("txt2img_sdxl", "SDXL text to image", "Generate high resolution images from a text prompt with the SDXL base and refiner checkpoints, tuned sampler and scheduler settings."),
 ("upscale_esrgan", "4x ESRGAN upscaler", "Upscale low resolution photos four times with an ESRGAN model, then sharpen fine details and remove compression artifacts."),
 ("inpaint_mask", "Mask inpainting", "Inpaint masked regions of a photo: paint a mask over unwanted objects and fill the area with content matching the surrounding scene."),
 ("outpaint_canvas", "Canvas outpainting", "Extend the borders of an artwork beyond the original canvas, outpainting new scenery on every side with seamless blending."),
 ("controlnet_pose", "ControlNet pose transfer", "Transfer a human pose from a reference skeleton with ControlNet openpose so generated characters match the exact body position."),
 ("controlnet_depth", "ControlNet depth guidance", "Use a depth map estimated by MiDaS to guide ControlNet and keep the spatial layout of rooms and landscapes during generation."),
 ("controlnet_canny", "Canny edge control", "Extract canny edges from a sketch or photo and condition generation on those outlines for precise line art colorization."),
 ("lora_anime", "Anime style LoRA", "Apply an anime character LoRA to produce cel shaded illustrations with vibrant colors, clean lineart and expressive eyes."),
 ("lora_watercolor", "Watercolor LoRA", "Stack a watercolor painting LoRA with soft paper texture to turn prompts into delicate washes and bleeding pigment effects."),
 ("video_animatediff", "AnimateDiff video", "Animate still prompts into short looping video clips using AnimateDiff motion modules and frame interpolation."),
 ("video_svd", "Stable Video Diffusion", "Turn a single keyframe into a smooth camera motion video with Stable Video Diffusion and adjustable motion bucket strength."),
 ("bg_removal", "Background removal", "Remove the background from product shots automatically, producing transparent cutouts ready for ecommerce catalogs."),
 ("color_grading", "Cinematic color grading", "Apply cinematic teal and orange color grading with lookup tables, film grain and vignette to finished renders."),
 ("sketch_to_render", "Sketch to render", "Convert rough architectural sketches into photorealistic building renders with materials, daylight and landscaping."),
 ("logo_design", "Logo generator", "Design minimal vector style logos and brand marks from a company name and a few keywords about the business."),
 ("texture_tiling", "Seamless textures", "Create seamless tileable textures for games such as stone walls, wood planks and fabric with circular padding."),
 ("pixel_art", "Pixel art sprites", "Produce retro pixel art sprites and tilesets at low resolution with a limited palette for indie game prototypes."),
 ("interior_design", "Interior redesign", "Restyle photos of living rooms and kitchens into scandinavian, industrial or bohemian interior design concepts."),
 ("fashion_tryon", "Virtual try on", "Dress a model photo in new garments for virtual clothing try on while preserving body shape and fabric folds."),
 ("product_photo", "Product photography", "Place bottles, cosmetics and gadgets into studio product photography scenes with soft shadows and reflections."),
 ("food_styling", "Food styling", "Make appetizing restaurant food photography with steam, garnish and shallow depth of field for menus and delivery apps."),
 ("comic_panels", "Comic panel layout", "Generate consistent comic book panels with speech bubbles, halftone shading and a recurring hero across pages."),
 ("children_book", "Storybook illustration", "Illustrate children storybook pages with friendly animals, pastel palettes and consistent characters between scenes."),
 ("sticker_pack", "Sticker pack maker", "Make die cut sticker sheets with thick white outlines, cute mascots and emoji style expressions for messaging apps."),
 ("tattoo_flash", "Tattoo flash designs", "Draft blackwork and traditional tattoo flash designs with bold outlines, dotwork shading and symmetrical ornaments."),
 ("architecture_massing", "Massing studies", "Explore early architecture massing studies of towers and pavilions under dramatic sunset lighting from aerial views."),
 ("car_concept", "Car concept art", "Render futuristic electric car concept art with glossy paint, motion blur streets and studio turntable angles."),
 ("space_matte", "Space matte painting", "Paint epic science fiction matte paintings of nebulae, alien planets and orbiting stations for film previsualization."),
 ("fantasy_map", "Fantasy map maker", "Draw parchment fantasy maps with mountains, rivers, kingdoms and hand lettered labels for tabletop campaigns."),
 ("depth_parallax", "Depth parallax", "Estimate depth from a single photograph and create a parallax three dimensional camera animation for social media."),
 ("relight_scene", "Scene relighting", "Relight an existing photo with new light sources, golden hour warmth or neon night ambience using normal maps."),
 ("denoise_restore", "Old photo restoration", "Restore scanned vintage photographs by removing scratches, dust and noise, then colorize black and white prints."),
 ("hdr_merge", "HDR bracket merge", "Merge bracketed exposures into a high dynamic range image and tone map highlights and shadows naturally."),
 ("qr_art", "Artistic QR codes", "Blend scannable QR codes into illustrated artwork using ControlNet tile and brightness conditioning."),
 ("typography_poster", "Typography poster", "Compose bold typographic posters with generated lettering, grid layouts and risograph print aesthetics."),
 ("icon_set", "Flat icon set", "Generate coherent flat icon sets for user interfaces with consistent stroke width, rounded corners and palette."),
 ("avatar_3d", "3D avatar render", "Create stylized three dimensional avatar renders with subsurface skin, hair cards and soft rim lighting."),
 ("landscape_photo", "Landscape photography", "Produce breathtaking mountain lake landscape photography at dawn with mist, reflections and wide angle lenses."),
 ("wildlife_photo", "Wildlife photography", "Capture realistic wildlife photography of foxes, owls and deer in snowy forests with telephoto bokeh."),
 ("macro_insects", "Macro insects", "Shoot extreme macro photography of insects and dew drops with focus stacking for razor sharp detail."),
 ("underwater_scene", "Underwater scenes", "Generate underwater coral reef scenes with caustic light rays, schools of tropical fish and drifting particles."),
 ("steampunk_machines", "Steampunk machines", "Design intricate steampunk machinery with brass gears, pressure gauges, rivets and billowing steam clouds."),
 ("isometric_rooms", "Isometric rooms", "Build cozy isometric miniature rooms with tiny furniture, plants and warm lamps in a diorama style."),
 ("glitch_art", "Glitch art", "Apply datamosh glitch art effects with pixel sorting, chromatic aberration and scanline distortion to images."),
 ("oil_painting", "Oil painting style", "Transform photographs into classical oil painting style artworks with visible brush strokes and canvas texture."),
 ("ink_wash", "Ink wash painting", "Paint east asian ink wash landscapes with misty mountains, bamboo and calligraphy using sumi brush dynamics."),
 ("neon_cyberpunk", "Neon cyberpunk city", "Render rainy neon cyberpunk city streets with holographic signs, reflections and crowded night markets."),
 ("batch_variations", "Batch variations", "Run batch seed variations of a prompt grid to compare samplers, CFG scales and step counts side by side."),
 ("prompt_styles", "Prompt style mixer", "Mix and weight multiple style prompts with concatenation nodes to explore hybrid aesthetics quickly. Docs at https://example.com/styles #prompting"),
]
assert len(docs) == 50
noise = ["<b>New!</b> ", "", "", "Contact team@example.com for help. ", ""]
for i,(id_, name, desc) in enumerate(docs):
    likes = [0, 3, 12, 57, 140, 412, 980, 2300][rng.randrange(8)] if id_ != "img2img_basic" else 412
    pre = noise[i % len(noise)]
    dump(f'{R}/corpus/{id_}.json', {"id": id_, "name": name, "description": pre + desc, "likes": likes, "source": "openart"})

# ---------------- workflows ----------------
img2img = {
 "version": 1, "id": "img2img_basic", "name": "Basic image to image",
 "description": "Convert image to image: take an input picture, resize it and repaint it with the ThinkDiffusion XL checkpoint guided by a text prompt.",
 "tags": ["img2img", "sdxl"], "likes": 412,
 "nodes": [
  {"id": "load", "type": "load_image", "params": {"path": "input.ppm"}},
  {"id": "resize", "type": "resize", "params": {"width": 32, "height": 32}, "inputs": {"image": {"node": "load", "port": "image"}}},
  {"id": "prompt", "type": "text_prompt", "params": {"text": "a watercolor landscape at dusk"}},
  {"id": "img2img", "type": "ThinkDiffusionImg2Img", "params": {"ckpt_name": "ThinkDiffusionXL.safetensors", "strength": 0.6, "seed": 7},
   "inputs": {"image": {"node": "resize", "port": "image"}, "prompt": {"node": "prompt", "port": "text"}}},
  {"id": "save", "type": "save_image", "params": {"path": "output.ppm"}, "inputs": {"image": {"node": "img2img", "port": "image"}}}
 ]}
dump(f'{R}/workflows/img2img_basic.flow.json', img2img)

faceswap = {
 "version": 1, "id": "faceswap_ipadapter", "name": "IP Adapter face swap",
 "description": "Swap a face into a portrait photo with IP Adapter: generate a base portrait, then apply the reference face through the IP Adapter checkpoint.",
 "tags": ["faceswap", "ipadapter", "portrait"], "likes": 0,
 "nodes": [
  {"id": "prompt", "type": "text_prompt", "params": {"text": "studio portrait photo of a smiling person"}},
  {"id": "base", "type": "mock_generate", "params": {"seed": 11, "width": 24, "height": 24}, "inputs": {"prompt": {"node": "prompt", "port": "text"}}},
  {"id": "swap", "type": "IPAdapterApply", "params": {"ckpt_name": "ip-adapter_sd15.safetensors", "strength": 0.35, "seed": 3},
   "inputs": {"image": {"node": "base", "port": "image"}, "prompt": {"node": "prompt", "port": "text"}}},
  {"id": "save", "type": "save_image", "params": {"path": "faceswap.ppm"}, "inputs": {"image": {"node": "swap", "port": "image"}}}
 ]}
dump(f'{R}/workflows/faceswap_ipadapter.flow.json', faceswap)

chain = {
 "version": 1, "id": "image_chain", "name": "Blur invert resize chain",
 "description": "Load an image, blur it, invert the colors and resize the result before saving.",
 "tags": ["basic"], "likes": 5,
 "nodes": [
  {"id": "load", "type": "load_image", "params": {"path": "input.ppm"}},
  {"id": "blur", "type": "box_blur", "params": {"radius": 1}, "inputs": {"image": {"node": "load", "port": "image"}}},
  {"id": "invert", "type": "invert", "inputs": {"image": {"node": "blur", "port": "image"}}},
  {"id": "resize", "type": "resize", "params": {"width": 8, "height": 8}, "inputs": {"image": {"node": "invert", "port": "image"}}},
  {"id": "save", "type": "save_image", "params": {"path": "chain.ppm"}, "inputs": {"image": {"node": "resize", "port": "image"}}}
 ]}
dump(f'{R}/workflows/image_chain.flow.json', chain)

# ---------------- assets ----------------
def manifest(pack, type_name):
    return json.dumps({"pack": pack, "nodes": {type_name: {
        "executor": "checkpoint_img2img",
        "inputs": {"image": "Image", "prompt": "Text"},
        "outputs": {"image": "Image"},
        "params": {"ckpt_name": {"kind": "text"}, "strength": {"kind": "real", "default": 0.5}, "seed": {"kind": "integer", "default": 0}}}}}, indent=2)

def blob(n, seed):
    r = random.Random(seed); return bytes(r.randrange(256) for _ in range(n))

def asset(name, kind, save_path, content=None, raw=None, size=None, provides=None, url=None):
    data = content.encode() if content is not None else raw
    d = {"name": name, "kind": kind, "url": url or f"sim://blobs/{name}", "save_path": save_path,
         "size_bytes": size if size is not None else len(data), "checksum": hashlib.sha256(data).hexdigest()}
    if provides: d["provides"] = provides
    a = {"descriptor": d}
    if content is not None: a["content"] = content
    else: a["content_b64"] = base64.b64encode(raw).decode()
    return a

td_pack = asset("comfyui-thinkdiffusion", "node_pack", "custom_nodes/comfyui-thinkdiffusion/nodes.json",
                content=manifest("comfyui-thinkdiffusion", "ThinkDiffusionImg2Img"), provides=["ThinkDiffusionImg2Img"])
td_model = asset("ThinkDiffusionXL.safetensors", "model", "models/checkpoints/ThinkDiffusionXL.safetensors",
                 raw=blob(96, 1), size=6940000000)
ip_pack = asset("comfyui-ipadapter", "node_pack", "custom_nodes/comfyui-ipadapter/nodes.json",
                content=manifest("comfyui-ipadapter", "IPAdapterApply"), provides=["IPAdapterApply"])
ip_model = asset("ip-adapter_sd15.safetensors", "model", "models/ipadapter/ip-adapter_sd15.safetensors", raw=blob(64, 2), size=44642768)
dump(f'{R}/assets/catalog.json', [td_pack, td_model, ip_pack, ip_model])

# ---------------- sites ----------------
def el(box, source, **props):
    return {"bbox": box, "source": source, "properties": props}

def row(y):  # standard element box on row y
    return [40, y, 400, y + 30]

openart = {
 "start": "home",
 "pages": {
  "home": {
   "title": "Community workflows",
   "w_elements": [
     el(row(10), "W", target="login", role="button", label="Sign in"),
     el(row(60), "W", target="restore", role="link", label="Face restoration tools"),
     el(row(110), "W", target="explore", role="link", label="Explore portrait workflows"),
     el(row(160), "W", target="landscapes", role="link", label="Landscape gallery"),
   ],
   "o_elements": [
     el([41, 61, 399, 91], "O", function="opens old photo repair utilities"),
     el([40, 111, 401, 139], "O", function="browse community portrait and face editing"),
     el([600, 10, 760, 300], "O", caption="Sponsored: face cream advertisement"),
   ],
   "links": {"login": "login", "restore": "restore", "explore": "explore", "landscapes": "landscapes"},
  },
  "login": {"title": "Sign in", "w_elements": [el(row(10), "W", role="textbox", label="Email")]},
  "restore": {
   "title": "Restoration",
   "w_elements": [el(row(10), "W", target="scratch", role="link", label="Scratch removal for scanned prints")],
   "links": {"scratch": "landscapes"},
  },
  "landscapes": {
   "title": "Landscapes",
   "w_elements": [el(row(10), "W", target="lake", role="link", label="Mountain lake at dawn")],
   "downloads": {"lake": img2img},
  },
  "explore": {
   "title": "Explore",
   "w_elements": [
     el(row(10), "W", target="portraits", role="link", label="Portrait category"),
     el(row(60), "W", target="anime", role="link", label="Anime category"),
   ],
   "o_elements": [el(row(10), "O", function="lists portrait photo workflows including face swap")],
   "links": {"portraits": "portraits", "anime": "landscapes"},
  },
  "portraits": {
   "title": "Portraits",
   "w_elements": [
     el(row(10), "W", target="lighting", role="link", label="Portrait lighting presets"),
     el(row(60), "W", target="faceswap", role="link", label="Face swap collection"),
   ],
   "o_elements": [el(row(60), "O", function="swap faces between photos using ip adapter")],
   "links": {"lighting": "lighting", "faceswap": "faceswap"},
  },
  "lighting": {"title": "Lighting", "w_elements": [el(row(10), "W", role="text", label="Rembrandt lighting")]},
  "faceswap": {
   "title": "Face swap",
   "w_elements": [
     el(row(10), "W", target="broken", role="button", label="Download face swap (legacy)"),
     el(row(60), "W", target="detail", role="link", label="IP Adapter face swap workflow"),
   ],
   "o_elements": [el(row(60), "O", function="workflow detail page for ip adapter portrait face swap")],
   "links": {"detail": "detail"},
   "downloads": {"broken": "{\"version\": 1, \"id\": \"legacy\", \"nodes\": ["},
  },
  "detail": {
   "title": "IP Adapter face swap",
   "w_elements": [el(row(10), "W", target="json", role="button", label="Download workflow")],
   "o_elements": [el(row(10), "O", function="download ip adapter face swap portrait workflow json")],
   "downloads": {"json": faceswap},
  },
 },
 "assets": [ip_pack, ip_model, td_pack, td_model],
}
dump(f'{R}/sites/openart_like.json', openart)

one_page = {
 "start": "home",
 "pages": {"home": {
   "title": "Single workflow",
   "w_elements": [el(row(10), "W", target="dl", role="button", label="Download image to image workflow")],
   "downloads": {"dl": img2img}}},
 "assets": [td_pack, td_model],
}
dump(f'{R}/sites/one_page.json', one_page)

unmatched = {
 "start": "home",
 "pages": {
  "home": {"title": "Car wallpapers",
           "w_elements": [el(row(10), "W", target="cars", role="link", label="Sports car wallpapers"),
                          el(row(60), "W", target="bikes", role="link", label="Motorbike wallpapers")],
           "links": {"cars": "cars", "bikes": "bikes"}},
  "cars": {"title": "Cars", "w_elements": [el(row(10), "W", target="pack", role="button", label="Download wallpaper pack")],
           "downloads": {"pack": "not a workflow"}},
  "bikes": {"title": "Bikes"},
 },
}
dump(f'{R}/sites/unmatched.json', unmatched)

two_hop = {
 "start": "a",
 "pages": {
  "a": {"w_elements": [el(row(10), "W", target="n", label="image to image")], "links": {"n": "b"}},
  "b": {"w_elements": [el(row(10), "W", target="n", label="image to image")], "links": {"n": "c"}},
  "c": {"w_elements": [el(row(10), "W", target="dl", label="image to image workflow")], "downloads": {"dl": img2img}},
 },
}
dump(f'{R}/sites/two_hop.json', two_hop)

planted = {
 "start": "home",
 "pages": {
  "home": {"title": "Workflow hub",
           "w_elements": [el(row(10), "W", target="tips", role="link", label="Face swap tips and tricks"),
                          el(row(60), "W", target="portraits", role="link", label="Portrait photo styles")],
           "links": {"tips": "tips", "portraits": "portraits"}},
  "tips": {"title": "Tips", "w_elements": [el(row(10), "W", role="text", label="Use good lighting")]},
  "portraits": {"title": "Portraits",
                "w_elements": [el(row(10), "W", target="back", role="link", label="Portrait hub home"),
                               el(row(60), "W", target="fs", role="link", label="IP adapter face swap collection")],
                "links": {"back": "home", "fs": "faceswap"}},
  "faceswap": {"title": "Face swap",
               "w_elements": [el(row(10), "W", target="d", role="link", label="IP Adapter face swap workflow details")],
               "links": {"d": "detail"}},
  "detail": {"title": "Detail",
             "w_elements": [el(row(10), "W", target="json", role="button", label="Download face swap workflow")],
             "downloads": {"json": faceswap}},
 },
 "assets": [ip_pack, ip_model],
}
dump(f'{R}/sites/planted_path.json', planted)

# ---------------- detections ----------------
dump(f'{R}/detections/w.json', openart["pages"]["home"]["w_elements"])
dump(f'{R}/detections/o.json', openart["pages"]["home"]["o_elements"])

# ---------------- images ----------------
w = h = 16
px = bytearray()
for y in range(h):
    for x in range(w):
        px += bytes([(x * 16) % 256, (y * 16) % 256, ((x + y) * 8) % 256])
with open(f'{R}/images/input.ppm', 'wb') as f:
    f.write(b'P6\n16 16\n255\n' + bytes(px))
print("ok")
